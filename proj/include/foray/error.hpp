#pragma once

#include <stdexcept>
#include <string>

namespace foray {

struct SourcePos {
  int line = 0;
  int column = 0;

  bool valid() const { return line > 0; }
};

/// Every failure in the library surfaces as this exception. `code` is a
/// stable machine-readable identifier (e.g. "UndeclaredToken") and `subject`
/// names the offending entity when there is one.
class Error : public std::runtime_error {
 public:
  Error(std::string code, std::string subject, std::string detail = {},
        SourcePos pos = {});

  const std::string& code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }
  const std::string& detail() const noexcept { return detail_; }
  const SourcePos& pos() const noexcept { return pos_; }

 private:
  std::string code_;
  std::string subject_;
  std::string detail_;
  SourcePos pos_;
};

}  // namespace foray
