#include "textsr/core/tensor.hpp"

// Header-only for now; the translation unit anchors the target.
