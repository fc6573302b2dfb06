#pragma once

// Umbrella header for the effocr engine: detection-based localization,
// retrieval-based recognition against font-rendered exemplar indexes, page
// assembly, evaluation, and export tooling.

#include "effocr/assembly.hpp"
#include "effocr/coco.hpp"
#include "effocr/config.hpp"
#include "effocr/detection.hpp"
#include "effocr/encoder.hpp"
#include "effocr/errors.hpp"
#include "effocr/evaluation.hpp"
#include "effocr/export.hpp"
#include "effocr/fonts.hpp"
#include "effocr/geometry.hpp"
#include "effocr/image.hpp"
#include "effocr/image_io.hpp"
#include "effocr/index.hpp"
#include "effocr/onnx.hpp"
#include "effocr/pipeline.hpp"
#include "effocr/recognition.hpp"
#include "effocr/utf8.hpp"
