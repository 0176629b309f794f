#include "copy_primitive.h"

#include <cstring>

namespace ediag {

CopyFn volatile g_copy_primitive = &std::memcpy;

}  // namespace ediag
