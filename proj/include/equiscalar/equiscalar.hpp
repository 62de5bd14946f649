#pragma once

#include "equiscalar/config.hpp"
#include "equiscalar/core_types.hpp"
#include "equiscalar/einsum.hpp"
#include "equiscalar/equivariant_basis.hpp"
#include "equiscalar/group_actions.hpp"
#include "equiscalar/io.hpp"
#include "equiscalar/mpnn.hpp"
#include "equiscalar/parallel.hpp"
#include "equiscalar/physics.hpp"
#include "equiscalar/random.hpp"
#include "equiscalar/scalar_features.hpp"
#include "equiscalar/scalar_net.hpp"
#include "equiscalar/targets.hpp"
#include "equiscalar/verify.hpp"
