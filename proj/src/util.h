#ifndef EDIAG_SRC_UTIL_H_
#define EDIAG_SRC_UTIL_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ediag::util {

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, std::string_view contents);

// Splits on '\n'; a trailing '\r' is stripped and a final empty line dropped.
std::vector<std::string_view> SplitLines(std::string_view text);

// Strict decimal parse of the whole token; nullopt-like failure via bool.
bool ParseInt64(std::string_view token, int64_t* out);
bool ParseUint64(std::string_view token, uint64_t* out);

// Six significant digits, "%.6g".
std::string Sig6(double value);
// `value` rounded to six significant digits, for JSON emission.
double Round6(double value);

int64_t EpochMsNow();

}  // namespace ediag::util

#endif  // EDIAG_SRC_UTIL_H_
