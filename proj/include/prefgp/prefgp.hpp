#pragma once

#include "acquisition.hpp"
#include "core.hpp"
#include "experiments.hpp"
#include "gp.hpp"
#include "json_io.hpp"
#include "monotonicity.hpp"
#include "normal.hpp"
#include "preferences.hpp"
#include "random.hpp"
#include "session.hpp"
#include "synthetic.hpp"
