#pragma once

#include "sprcfd/actuator.hpp"
#include "sprcfd/common.hpp"
#include "sprcfd/fdi.hpp"
#include "sprcfd/harness.hpp"
#include "sprcfd/numerics.hpp"
#include "sprcfd/plant.hpp"
#include "sprcfd/sprc.hpp"
#include "sprcfd/supervisor.hpp"
