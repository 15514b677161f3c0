// thermotrack.hpp -- umbrella header.
#pragma once

#include "thermotrack/background.hpp"
#include "thermotrack/codec.hpp"
#include "thermotrack/config.hpp"
#include "thermotrack/core.hpp"
#include "thermotrack/counting.hpp"
#include "thermotrack/gaussian.hpp"
#include "thermotrack/ingest.hpp"
#include "thermotrack/jsonl.hpp"
#include "thermotrack/records.hpp"
#include "thermotrack/scenes.hpp"
#include "thermotrack/screening.hpp"
#include "thermotrack/signature.hpp"
#include "thermotrack/signature_fit.hpp"
#include "thermotrack/simulator.hpp"
#include "thermotrack/tracking.hpp"
