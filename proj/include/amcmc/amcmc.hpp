#ifndef AMCMC_AMCMC_HPP
#define AMCMC_AMCMC_HPP

#include "errors.hpp"
#include "graph_model.hpp"
#include "geometry.hpp"
#include "dynamics.hpp"
#include "particles.hpp"
#include "spectral.hpp"

#endif  // AMCMC_AMCMC_HPP
