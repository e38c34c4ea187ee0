#pragma once

#include "sphereot/errors.hpp"
#include "sphereot/sphere_geometry.hpp"
#include "sphereot/measure.hpp"
#include "sphereot/transport.hpp"
#include "sphereot/map_extractor.hpp"
#include "sphereot/regularity.hpp"
#include "sphereot/mtw.hpp"
#include "sphereot/io.hpp"
#include "sphereot/pipeline.hpp"
