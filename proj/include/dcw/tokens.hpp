#pragma once

namespace dcw {

// Reserved vocabulary ids, identical in every vocabulary: padding, the
// decoder start symbol, the end-of-visit / end-of-output marker, and the
// diagnosis/treatment separator.
constexpr int kPadId = 0;
constexpr int kGoId = 1;
constexpr int kEndId = 2;
constexpr int kSepId = 3;
constexpr int kNumReserved = 4;

constexpr const char* kPadToken = "PAD";
constexpr const char* kGoToken = "GO";
constexpr const char* kEndToken = "∅";  // ∅
constexpr const char* kSepToken = "%";

}  // namespace dcw
