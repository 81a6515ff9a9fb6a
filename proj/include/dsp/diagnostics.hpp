#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace dsp {

// Non-fatal diagnostics (dropped terms, boundary coincidences, step-size
// hints). The default sink writes to stderr; tests and the CLI install their own.
using WarningSink = std::function<void(std::string_view)>;

void warn(std::string_view message);

/// Installs a sink and returns the previous one. Passing an empty function
/// silences warnings.
WarningSink set_warning_sink(WarningSink sink);

/// RAII capture of warnings into a string list, restoring the old sink on exit.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture();
  ~ScopedWarningCapture();
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool contains(std::string_view needle) const;

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace dsp
