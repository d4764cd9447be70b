#ifndef CVSEP_CVSEP_HPP
#define CVSEP_CVSEP_HPP

#include "dephasing.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "gaussian_state.hpp"
#include "golden_section.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "protocol.hpp"
#include "rng.hpp"
#include "separability.hpp"
#include "tomography.hpp"

#endif  // CVSEP_CVSEP_HPP
