#pragma once

#include "devbound/binomial.hpp"
#include "devbound/bounds.hpp"
#include "devbound/constants.hpp"
#include "devbound/errors.hpp"
#include "devbound/logspace.hpp"
#include "devbound/oracle.hpp"
#include "devbound/report.hpp"
#include "devbound/sequences.hpp"
#include "devbound/simulator.hpp"
