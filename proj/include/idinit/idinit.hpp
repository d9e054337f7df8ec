#pragma once

// Umbrella header for the IDInit library: identity-preserving initializers,
// the deterministic micro training engine, and the analysis probes.

#include "idinit/analysis.hpp"
#include "idinit/conv.hpp"
#include "idinit/data.hpp"
#include "idinit/init.hpp"
#include "idinit/matrix.hpp"
#include "idinit/mnist.hpp"
#include "idinit/net.hpp"
#include "idinit/report.hpp"
#include "idinit/rng.hpp"
#include "idinit/svd.hpp"
#include "idinit/verify.hpp"
