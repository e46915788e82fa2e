#pragma once

namespace idoc {

inline constexpr const char* kEngineVersion = "1.0.0";
inline constexpr int kIndexFormatVersion = 1;
inline constexpr const char* kIndexFormatName = "idoc-index";
inline constexpr const char* kEmbeddingFormatName = "IDOCEMB1";

}  // namespace idoc
