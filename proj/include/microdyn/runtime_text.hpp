#pragma once

#include <string_view>

namespace microdyn {

/// Contents of runtime/oly_rt.h and runtime/oly_rt.c as shipped with the
/// build.
std::string_view runtimeHeaderText();
std::string_view runtimeSourceText();

}  // namespace microdyn
