#ifndef EDIAG_SRC_COPY_PRIMITIVE_H_
#define EDIAG_SRC_COPY_PRIMITIVE_H_

#include <cstddef>

namespace ediag {

// std::memcpy behind a volatile function pointer defined in another
// translation unit, so the compiler cannot inline or fold the copy.
using CopyFn = void* (*)(void*, const void*, size_t);
extern CopyFn volatile g_copy_primitive;

inline void OpaqueCopy(void* dst, const void* src, size_t n) {
  g_copy_primitive(dst, src, n);
}

}  // namespace ediag

#endif  // EDIAG_SRC_COPY_PRIMITIVE_H_
