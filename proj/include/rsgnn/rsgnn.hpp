#ifndef RSGNN_RSGNN_HPP
#define RSGNN_RSGNN_HPP

#include "rsgnn/belief.hpp"
#include "rsgnn/encoder.hpp"
#include "rsgnn/errors.hpp"
#include "rsgnn/evaluate.hpp"
#include "rsgnn/graph.hpp"
#include "rsgnn/graph_io.hpp"
#include "rsgnn/heads.hpp"
#include "rsgnn/loss.hpp"
#include "rsgnn/matrix.hpp"
#include "rsgnn/metrics.hpp"
#include "rsgnn/rng.hpp"
#include "rsgnn/run_io.hpp"
#include "rsgnn/training.hpp"

namespace rsgnn {
inline constexpr const char* kVersion = "0.1.0";
}

#endif  // RSGNN_RSGNN_HPP
