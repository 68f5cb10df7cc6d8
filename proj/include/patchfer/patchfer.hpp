#pragma once

#include "patchfer/error.hpp"     // IWYU pragma: export
#include "patchfer/image.hpp"     // IWYU pragma: export
#include "patchfer/image_io.hpp"  // IWYU pragma: export
#include "patchfer/landmarks.hpp" // IWYU pragma: export
#include "patchfer/lbp.hpp"       // IWYU pragma: export
#include "patchfer/phog.hpp"      // IWYU pragma: export
#include "patchfer/reduce.hpp"    // IWYU pragma: export
#include "patchfer/svm.hpp"       // IWYU pragma: export
#include "patchfer/eval.hpp"      // IWYU pragma: export
#include "patchfer/classes.hpp"   // IWYU pragma: export
#include "patchfer/pipeline.hpp"  // IWYU pragma: export
#include "patchfer/model_io.hpp"  // IWYU pragma: export
#include "patchfer/synth.hpp"     // IWYU pragma: export
