#pragma once

// Everything at once. Only experiment/sweep pull in nlohmann json.

#include "sleepnet/error.hpp"
#include "sleepnet/random.hpp"
#include "sleepnet/lif.hpp"
#include "sleepnet/synapse.hpp"
#include "sleepnet/plasticity.hpp"
#include "sleepnet/sleep.hpp"
#include "sleepnet/encoding.hpp"
#include "sleepnet/datasets.hpp"
#include "sleepnet/readout.hpp"
#include "sleepnet/network.hpp"
#include "sleepnet/sg_model.hpp"
#include "sleepnet/config.hpp"
#include "sleepnet/experiment.hpp"
#include "sleepnet/sweep.hpp"
