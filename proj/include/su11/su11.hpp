#pragma once

#include "specfun.hpp"
#include "disk.hpp"
#include "bergman.hpp"
#include "channel.hpp"
#include "transforms.hpp"
#include "spectral.hpp"
#include "experiment.hpp"
