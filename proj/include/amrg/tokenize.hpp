#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace amrg {

/// Lowercased word tokens from the canonical tokenizer. Never holds empty tokens.
using TokenSeq = std::vector<std::string>;

/// Lowercases ASCII and splits on every run of non-alphanumeric bytes.
/// Shared by the generation metrics and the clinical term matcher.
auto tokenize(std::string_view text) -> TokenSeq;

auto to_lower(std::string_view text) -> std::string;

} // namespace amrg
