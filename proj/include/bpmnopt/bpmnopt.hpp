#pragma once

// Everything except the command-line front end (bpmnopt/cli.hpp).

#include "bpmnopt/bpmn_model.hpp"
#include "bpmnopt/cost_model.hpp"
#include "bpmnopt/dag.hpp"
#include "bpmnopt/dag_io.hpp"
#include "bpmnopt/error.hpp"
#include "bpmnopt/experiment.hpp"
#include "bpmnopt/format.hpp"
#include "bpmnopt/mapping.hpp"
#include "bpmnopt/optimizer.hpp"
#include "bpmnopt/ordering_instance.hpp"
#include "bpmnopt/stats_catalog.hpp"
