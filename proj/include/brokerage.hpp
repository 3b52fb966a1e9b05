#pragma once

#include "brokerage/core.hpp"
#include "brokerage/distributions.hpp"
#include "brokerage/environments.hpp"
#include "brokerage/errors.hpp"
#include "brokerage/estimator.hpp"
#include "brokerage/experiment.hpp"
#include "brokerage/harness.hpp"
#include "brokerage/policies.hpp"
#include "brokerage/random.hpp"
#include "brokerage/version.hpp"
