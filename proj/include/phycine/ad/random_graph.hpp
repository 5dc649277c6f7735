#pragma once

#include <cstdint>

namespace phycine::ad {

// Builds one random composite graph that exercises the whole op family
// (every registered op appears at least once), then compares analytic
// gradients against central finite differences (eps = 1e-5).
// Returns the maximum relative error over input coordinates.
double random_graph_grad_error(std::uint64_t seed);

}  // namespace phycine::ad
