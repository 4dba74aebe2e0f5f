#pragma once

#include "odt/analysis.hpp"
#include "odt/baselines.hpp"
#include "odt/checkpoint.hpp"
#include "odt/errors.hpp"
#include "odt/ingestion.hpp"
#include "odt/model.hpp"
#include "odt/neighbor_reg.hpp"
#include "odt/objective.hpp"
#include "odt/sequence.hpp"
#include "odt/solver.hpp"
#include "odt/synth.hpp"
#include "odt/tensor.hpp"
#include "odt/tensor_io.hpp"
