#pragma once

namespace gridform {

// Library/CLI version, embedded in every artifact header so that result files
// are traceable to the code that produced them.
inline constexpr const char* kVersion = "1.0.0";

}  // namespace gridform
