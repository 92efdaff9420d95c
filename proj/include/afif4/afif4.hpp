#pragma once

// Umbrella header for the AFIF4 gender-classification pipeline.

#include "afif4/config.hpp"
#include "afif4/datagen.hpp"
#include "afif4/facepatch.hpp"
#include "afif4/fusion.hpp"
#include "afif4/harness.hpp"
#include "afif4/image.hpp"
#include "afif4/landmarks.hpp"
#include "afif4/manifest.hpp"
#include "afif4/membrane.hpp"
#include "afif4/net.hpp"
#include "afif4/report.hpp"
#include "afif4/retinex.hpp"
