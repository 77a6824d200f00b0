#pragma once

#include "sisctl/check.hpp"
#include "sisctl/control.hpp"
#include "sisctl/errors.hpp"
#include "sisctl/filter.hpp"
#include "sisctl/graph.hpp"
#include "sisctl/harness.hpp"
#include "sisctl/oracle.hpp"
#include "sisctl/random_graph.hpp"
#include "sisctl/rng.hpp"
#include "sisctl/sis.hpp"

namespace sisctl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sisctl
