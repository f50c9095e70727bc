#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "irt/grm/response_matrix.hpp"

namespace irt::io {

struct ResponseFormat {
  std::string missing_token;             // cell text meaning "missing"; empty cells are always missing
  std::optional<int> categories;         // same J for every item
  std::optional<Eigen::VectorXi> per_item_categories;  // overrides `categories`
};

/// Reads a header row of item names followed by one row per person of
/// integer codes 1..J_i or the missing token. Without an override J_i is the
/// largest observed code (at least 2).
ResponseMatrix load_responses(const std::filesystem::path& path, const ResponseFormat& format = {});
ResponseMatrix parse_responses(const std::string& text, const ResponseFormat& format = {});

/// Writes the header and codes; missing cells are left empty.
std::string format_responses(const ResponseMatrix& data);

/// Splits one CSV line; double quotes group and "" escapes a quote.
std::vector<std::string> split_csv_line(const std::string& line);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double x);

/// Table with a header row; `row_labels` (1-based ids when empty) fill the first column.
std::string format_table(const std::vector<std::string>& header, const Eigen::MatrixXd& values,
                         const std::vector<std::string>& row_labels = {});

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace irt::io
