#pragma once

#include <string>
#include <string_view>

namespace amrg::nlg {

/// Porter (1980) suffix-stripping stemmer for lowercase ASCII words.
/// Words of two letters or fewer are returned unchanged.
auto porter_stem(std::string_view word) -> std::string;

} // namespace amrg::nlg
