#include "ctxbias/error.hpp"

namespace ctxbias {

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::bad_magic: return "bad magic";
    case ParseErrorKind::bad_version: return "unsupported version";
    case ParseErrorKind::truncated: return "truncated";
    case ParseErrorKind::trailing_bytes: return "trailing bytes";
    case ParseErrorKind::count_mismatch: return "count mismatch";
    case ParseErrorKind::bad_dimensions: return "bad dimensions";
    case ParseErrorKind::label_out_of_range: return "label out of range";
    case ParseErrorKind::bad_record_length: return "bad record length";
    case ParseErrorKind::empty_width: return "empty feature width";
    case ParseErrorKind::bad_value: return "bad value";
  }
  return "parse error";
}

}  // namespace ctxbias
