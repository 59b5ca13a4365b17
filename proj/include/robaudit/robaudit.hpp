#pragma once

#include "robaudit/approximators.hpp"
#include "robaudit/benchmark.hpp"
#include "robaudit/core_ols.hpp"
#include "robaudit/diagnostics.hpp"
#include "robaudit/error.hpp"
#include "robaudit/format.hpp"
#include "robaudit/greedy.hpp"
#include "robaudit/io.hpp"
#include "robaudit/oracle.hpp"
#include "robaudit/parallel.hpp"
#include "robaudit/report.hpp"
#include "robaudit/scenarios.hpp"
