#pragma once

// Convenience include for the whole library. The HTTP transport
// (http_transport.hpp) is intentionally excluded; include it directly where a
// real network client is wanted.

#include "buildevo/common.hpp"
#include "buildevo/csv.hpp"
#include "buildevo/dataset.hpp"
#include "buildevo/dsl/ast.hpp"
#include "buildevo/dsl/eval.hpp"
#include "buildevo/dsl/parse.hpp"
#include "buildevo/dsl/print.hpp"
#include "buildevo/evaluation.hpp"
#include "buildevo/evolution.hpp"
#include "buildevo/heuristic.hpp"
#include "buildevo/imputation.hpp"
#include "buildevo/ledger.hpp"
#include "buildevo/mock_provider.hpp"
#include "buildevo/pifl.hpp"
#include "buildevo/prompts.hpp"
#include "buildevo/provider.hpp"
#include "buildevo/reflection.hpp"
#include "buildevo/report.hpp"
#include "buildevo/timeutil.hpp"
#include "buildevo/types.hpp"
