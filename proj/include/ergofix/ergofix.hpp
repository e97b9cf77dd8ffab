#pragma once

#include "ergofix/error.hpp"
#include "ergofix/semigroup.hpp"
#include "ergofix/quadrature.hpp"
#include "ergofix/mean.hpp"
#include "ergofix/operators.hpp"
#include "ergofix/ergodic.hpp"
#include "ergofix/iterate.hpp"
#include "ergofix/oracle.hpp"
#include "ergofix/builtins.hpp"
