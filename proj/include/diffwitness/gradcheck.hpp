#pragma once

// Surrogate Jacobians against finite differences of the frozen-candidate
// surrogate, plus the relative-pose identity of gradient transport.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "diffwitness/gradient.hpp"

namespace dw::gradient {

struct GradcheckOptions {
  int probes = 100;
  std::uint64_t seed = 0;
  double h = 1e-6;
  double tolerance = 1e-3;
  smoothing::Score score = smoothing::Score::Distance;
  smoothing::SamplingConfig sampling;
  double crossScale = 1.0;  // mutation hook, see witnessJacobians
};

struct GradcheckReport {
  int probes = 0;
  // x1_xi1, x2_xi2, x1_xi2, x2_xi1
  std::array<double, 4> maxBlockError{};
  double maxTransportError = 0.0;
  bool passed = true;
  std::vector<std::string> warnings;
};

const char* blockName(int k);

// FD of the surrogate with candidates, forward references and poses frozen at (t1, t2).
std::array<Mat36, 4> frozenSurrogateJacobians(const smoothing::SmoothedPair& pair, const Pose& t1, const Pose& t2,
                                              double h);

// Shapes are rescaled per probe to random diagonals in [0.02, 0.2].
GradcheckReport gradcheck(const CompositeShape& shape1, const CompositeShape& shape2, const GradcheckOptions& opt);

}  // namespace dw::gradient
