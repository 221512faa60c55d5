#pragma once

#include "phtp/errors.hpp"
#include "phtp/operator_core.hpp"
#include "phtp/ph_models.hpp"
#include "phtp/simulate.hpp"
#include "phtp/control_set.hpp"
#include "phtp/box_qp.hpp"
#include "phtp/transcription.hpp"
#include "phtp/ocp_solver.hpp"
#include "phtp/turnpike.hpp"
#include "phtp/reference.hpp"
