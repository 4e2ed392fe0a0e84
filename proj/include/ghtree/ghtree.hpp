#pragma once

#include "ghtree/error.hpp"
#include "ghtree/metric_space.hpp"
#include "ghtree/tree.hpp"
#include "ghtree/families.hpp"
#include "ghtree/gh.hpp"
#include "ghtree/embedding.hpp"
