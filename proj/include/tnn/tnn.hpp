#pragma once
// everything at once

#include "tnn/errors.hpp"
#include "tnn/rng.hpp"
#include "tnn/parallel.hpp"
#include "tnn/tensor.hpp"
#include "tnn/subspace.hpp"
#include "tnn/verdict.hpp"
#include "tnn/spectral.hpp"
#include "tnn/linprog.hpp"
#include "tnn/nuclear.hpp"
#include "tnn/decomp.hpp"
#include "tnn/subdiff.hpp"
#include "tnn/rpca.hpp"
#include "tnn/io.hpp"
#include "tnn/reproduce.hpp"
