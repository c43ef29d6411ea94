#pragma once

#include <string>
#include <vector>

namespace rfop::csv {

/// Splits one line on commas. Fields are not quoted in any format this
/// project reads or writes.
std::vector<std::string> split(const std::string& line);

/// Lines of `text`, with a trailing '\r' stripped from each.
std::vector<std::string> lines(const std::string& text);

}  // namespace rfop::csv
