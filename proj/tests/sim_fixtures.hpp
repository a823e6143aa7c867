// Small simulator configurations shared by the unit tests and the acceptance run.
#pragma once

#include "cwlaser/lasersim.hpp"

namespace cwl::fixtures {

// n = 4, q = 2: X/Y-swap symmetric, integral split counts on every factor.
inline Level2SimParams pipeline_n4() {
  Level2SimParams p;
  p.q = 2;
  p.counts = {{Component{1, 1, 2, 2}, 2}, {Component{1, 2, 1, 2}, 1}, {Component{2, 1, 1, 2}, 1}};
  p.A = SplitDistribution{2, 2, {{0, 0.5}, {2, 0.5}}};
  return p;
}

// n = 6 with all three k = 2 factors, so copies can carry holes.
inline Level2SimParams pipeline_holes() {
  Level2SimParams p;
  p.q = 2;
  p.counts = {{Component{1, 1, 2, 2}, 2}, {Component{0, 2, 2, 2}, 1}, {Component{2, 0, 2, 2}, 1},
              {Component{1, 2, 1, 2}, 1}, {Component{2, 1, 1, 2}, 1}};
  p.A = SplitDistribution{2, 2, {{0, 0.5}, {2, 0.5}}};
  p.B = SplitDistribution{2, 2, {{1, 1.0}}};
  return p;
}

// n = 40 block for the p_comp Monte-Carlo.
inline ComponentCounts pcomp_counts() {
  return {{Component{0, 2, 2, 2}, 2},
          {Component{2, 0, 2, 2}, 2},
          {Component{1, 1, 2, 2}, 4},
          {Component{1, 2, 1, 2}, 16},
          {Component{2, 1, 1, 2}, 16}};
}

inline SplitMap pcomp_splits() {
  SplitMap s;
  s[Component{1, 1, 2, 2}] = SplitDistribution{2, 2, {{0, 0.25}, {1, 0.5}, {2, 0.25}}};
  s[Component{0, 2, 2, 2}] = SplitDistribution{2, 2, {{0, 0.5}, {2, 0.5}}};
  s[Component{2, 0, 2, 2}] = s[Component{0, 2, 2, 2}];
  return s;
}

// Level 2, N = 2: two available Z-blocks.
inline StandardForm tiny_standard_form() {
  return StandardForm{2, 2, {StandardFactor{Component{1, 1, 2, 2}, 2, SplitDistribution{2, 2, {{0, 0.5}, {2, 0.5}}}}}};
}

// Six copies of <2,2,2>, two holes each.
inline std::vector<BrokenMatmul> half_broken_matmuls(std::uint64_t seed) {
  SimRng rng(seed, {1});
  std::vector<BrokenMatmul> mats;
  for (int t = 0; t < 6; ++t) {
    BrokenMatmul b{2, 2, 2, {}};
    const auto pos = rng.permutation(4);
    for (int h = 0; h < 2; ++h) b.holes.insert({pos[static_cast<size_t>(h)] / 2, pos[static_cast<size_t>(h)] % 2});
    mats.push_back(b);
  }
  return mats;
}

// Twelve copies of the tiny standard form, one hole each.
inline std::vector<BrokenCopy> half_broken_standard(const StandardForm& f, const SparseTensor& tstar,
                                                    std::uint64_t seed) {
  SimRng rng(seed, {2});
  const auto avail = available_z_blocks(f);
  std::vector<BrokenCopy> copies;
  for (int t = 0; t < 12; ++t) copies.push_back(break_copy(f, tstar, {avail[rng.below(avail.size())]}));
  return copies;
}

}  // namespace cwl::fixtures
