#pragma once

#include "crossreg/coarse_match.hpp"
#include "crossreg/error.hpp"
#include "crossreg/esf.hpp"
#include "crossreg/gmm_registration.hpp"
#include "crossreg/icp.hpp"
#include "crossreg/io_json.hpp"
#include "crossreg/parallel.hpp"
#include "crossreg/pipeline.hpp"
#include "crossreg/ply.hpp"
#include "crossreg/pointcloud.hpp"
#include "crossreg/procrustes.hpp"
#include "crossreg/random.hpp"
#include "crossreg/scoring.hpp"
#include "crossreg/spatial_index.hpp"
#include "crossreg/synthetic.hpp"
