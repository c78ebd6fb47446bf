#pragma once

#include "tidm/access_tree.hpp"
#include "tidm/additive.hpp"
#include "tidm/attribute_keys.hpp"
#include "tidm/bgw.hpp"
#include "tidm/bundle.hpp"
#include "tidm/canonical.hpp"
#include "tidm/dkg.hpp"
#include "tidm/dkg_protocol.hpp"
#include "tidm/error.hpp"
#include "tidm/field.hpp"
#include "tidm/idm.hpp"
#include "tidm/modmath.hpp"
#include "tidm/netsim.hpp"
#include "tidm/rng.hpp"
#include "tidm/sha256.hpp"
#include "tidm/shamir.hpp"
#include "tidm/stream_cipher.hpp"
