#include "wasncal/harness/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace wasncal::harness {

namespace {
std::atomic<bool> g_verbose{false};
std::mutex g_mutex;
}  // namespace

void set_verbose(bool on) { g_verbose.store(on); }
bool verbose() { return g_verbose.load(); }

void progress(const std::string& line) {
  if (!verbose()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "[wasncal] " << line << std::endl;
}

}  // namespace wasncal::harness
