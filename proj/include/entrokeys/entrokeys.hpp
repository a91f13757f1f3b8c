#pragma once

#include "entrokeys/cli.hpp"
#include "entrokeys/config.hpp"
#include "entrokeys/diffengine.hpp"
#include "entrokeys/discoverer.hpp"
#include "entrokeys/entropy.hpp"
#include "entrokeys/error.hpp"
#include "entrokeys/field.hpp"
#include "entrokeys/geometry.hpp"
#include "entrokeys/gradcheck.hpp"
#include "entrokeys/image_io.hpp"
#include "entrokeys/losses.hpp"
#include "entrokeys/metrics.hpp"
#include "entrokeys/numeric.hpp"
#include "entrokeys/parallel.hpp"
#include "entrokeys/synth.hpp"
#include "entrokeys/trajectory.hpp"
