#pragma once

#include "iths/adversary.hpp"
#include "iths/checks.hpp"
#include "iths/explorer.hpp"
#include "iths/harness.hpp"
#include "iths/message.hpp"
#include "iths/metrics.hpp"
#include "iths/party.hpp"
#include "iths/persistence.hpp"
#include "iths/quorum.hpp"
#include "iths/scenario.hpp"
#include "iths/sim.hpp"
#include "iths/trace_io.hpp"
#include "iths/types.hpp"
