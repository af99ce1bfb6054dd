#pragma once

#include "pvmppt/config.hpp"
#include "pvmppt/controllers.hpp"
#include "pvmppt/dataset.hpp"
#include "pvmppt/errors.hpp"
#include "pvmppt/golden_section.hpp"
#include "pvmppt/io.hpp"
#include "pvmppt/model_io.hpp"
#include "pvmppt/nn.hpp"
#include "pvmppt/normalization.hpp"
#include "pvmppt/pv_model.hpp"
#include "pvmppt/sim.hpp"
