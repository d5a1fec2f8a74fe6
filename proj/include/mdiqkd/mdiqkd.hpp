#pragma once

#include "mdiqkd/decoy_coherent.hpp"
#include "mdiqkd/fock_oracle.hpp"
#include "mdiqkd/numerics.hpp"
#include "mdiqkd/params.hpp"
#include "mdiqkd/params_file.hpp"
#include "mdiqkd/phase_postselect.hpp"
#include "mdiqkd/single_photon.hpp"
#include "mdiqkd/sweep.hpp"
#include "mdiqkd/verify.hpp"
