#pragma once

#include <string>

namespace wasncal::harness {

/// Progress lines go to stderr only when enabled (the CLI's --verbose).
void set_verbose(bool on);
bool verbose();
void progress(const std::string& line);

}  // namespace wasncal::harness
