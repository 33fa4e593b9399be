#pragma once

#include <functional>
#include <string>

namespace ppro {

using WarningSink = std::function<void(const std::string&)>;

// Routes library warnings; the default (and a null sink) writes to stderr.
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace ppro
