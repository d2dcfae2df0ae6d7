#include "foray/error.hpp"

namespace foray {

Error::Error(std::string code, std::string subject, std::string detail,
             SourcePos pos)
    : std::runtime_error(code + "(\"" + subject + "\")" +
                         (detail.empty() ? std::string{} : ": " + detail) +
                         (pos.valid() ? " at " + std::to_string(pos.line) +
                                            ":" + std::to_string(pos.column)
                                      : std::string{})),
      code_(std::move(code)),
      subject_(std::move(subject)),
      detail_(std::move(detail)),
      pos_(pos) {}

}  // namespace foray
