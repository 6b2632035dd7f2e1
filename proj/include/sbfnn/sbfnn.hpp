#pragma once
// Everything at once.

#include "sbfnn/activations.hpp"
#include "sbfnn/autodiff.hpp"
#include "sbfnn/biomodels.hpp"
#include "sbfnn/config.hpp"
#include "sbfnn/errors.hpp"
#include "sbfnn/evaluation.hpp"
#include "sbfnn/network.hpp"
#include "sbfnn/oracle.hpp"
#include "sbfnn/rng.hpp"
#include "sbfnn/spectral.hpp"
#include "sbfnn/svg.hpp"
#include "sbfnn/training.hpp"
