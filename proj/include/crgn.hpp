#pragma once

// Everything at once. Individual headers can be included on their own.

#include "crgn/error.hpp"
#include "crgn/hilbert.hpp"
#include "crgn/schedule.hpp"
#include "crgn/problem.hpp"
#include "crgn/flow.hpp"
#include "crgn/integrator.hpp"
#include "crgn/theory.hpp"
#include "crgn/gallery.hpp"
#include "crgn/app.hpp"
#include "crgn/harness.hpp"
