#pragma once

#include "cryptotriage/anomaly_gnn.hpp"
#include "cryptotriage/audit_log.hpp"
#include "cryptotriage/case_workflow.hpp"
#include "cryptotriage/csv.hpp"
#include "cryptotriage/error.hpp"
#include "cryptotriage/graph_io.hpp"
#include "cryptotriage/graph_store.hpp"
#include "cryptotriage/graphlime.hpp"
#include "cryptotriage/hash.hpp"
#include "cryptotriage/narrator.hpp"
#include "cryptotriage/pipeline.hpp"
#include "cryptotriage/prompt_template.hpp"
#include "cryptotriage/run_config.hpp"
#include "cryptotriage/service.hpp"
