#pragma once

#include "blurcam/error.hpp"
#include "blurcam/geometry.hpp"
#include "blurcam/image.hpp"
#include "blurcam/ingest.hpp"
#include "blurcam/metrics.hpp"
#include "blurcam/parallel.hpp"
#include "blurcam/plot.hpp"
#include "blurcam/png_io.hpp"
#include "blurcam/recovery.hpp"
#include "blurcam/simulator.hpp"
#include "blurcam/synth.hpp"
#include "blurcam/tracker.hpp"
#include "blurcam/trajectory.hpp"
