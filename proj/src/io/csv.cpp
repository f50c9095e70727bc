#include "irt/io/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "irt/errors.hpp"

namespace irt::io {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cell += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

ResponseMatrix parse_responses(const std::string& text, const ResponseFormat& format) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<std::string> names;
  while (names.empty() && std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    for (const std::string& cell : split_csv_line(line)) names.push_back(trim(cell));
  }
  if (names.empty()) throw ValidationError("response file has no header row");
  const auto items = static_cast<int>(names.size());

  std::vector<int> values;
  int persons = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) != items) {
      throw ParseError("expected " + std::to_string(items) + " cells, found " + std::to_string(cells.size()),
                       line_no, static_cast<int>(std::min(cells.size(), names.size())) + 1);
    }
    for (int i = 0; i < items; ++i) {
      const std::string cell = trim(cells[static_cast<std::size_t>(i)]);
      if (cell.empty() || (!format.missing_token.empty() && cell == format.missing_token)) {
        values.push_back(ResponseMatrix::kMissing);
        continue;
      }
      int code = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), code);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("cell '" + cell + "' is not an integer code", line_no, i + 1);
      }
      if (code < 1) {
        throw ValidationError("code " + std::to_string(code) + " at row " + std::to_string(line_no) +
                              ", column " + std::to_string(i + 1) + " is below 1");
      }
      values.push_back(code);
    }
    ++persons;
  }

  Eigen::MatrixXi codes(persons, items);
  for (int p = 0; p < persons; ++p)
    for (int i = 0; i < items; ++i) codes(p, i) = values[static_cast<std::size_t>(p) * items + i];

  Eigen::VectorXi categories(items);
  if (format.per_item_categories) {
    if (format.per_item_categories->size() != items) {
      throw ValidationError("category override lists " + std::to_string(format.per_item_categories->size()) +
                            " items, file has " + std::to_string(items));
    }
    categories = *format.per_item_categories;
  } else if (format.categories) {
    categories.setConstant(*format.categories);
  } else {
    for (int i = 0; i < items; ++i) categories[i] = std::max(2, persons > 0 ? codes.col(i).maxCoeff() : 2);
  }
  for (int i = 0; i < items; ++i) {
    if (categories[i] < 2) {
      throw ValidationError("item '" + names[static_cast<std::size_t>(i)] + "' declares fewer than 2 categories");
    }
    for (int p = 0; p < persons; ++p) {
      if (codes(p, i) > categories[i]) {
        throw ValidationError("code " + std::to_string(codes(p, i)) + " of item '" + names[static_cast<std::size_t>(i)] +
                              "' (person " + std::to_string(p + 1) + ") exceeds its " +
                              std::to_string(categories[i]) + " categories");
      }
    }
  }
  return ResponseMatrix(std::move(codes), std::move(categories), std::move(names));
}

ResponseMatrix load_responses(const std::filesystem::path& path, const ResponseFormat& format) {
  return parse_responses(read_text(path), format);
}

std::string format_responses(const ResponseMatrix& data) {
  std::string out;
  for (int i = 0; i < data.items(); ++i) {
    if (i > 0) out += ',';
    out += quote_if_needed(data.item_names()[static_cast<std::size_t>(i)]);
  }
  out += '\n';
  for (int p = 0; p < data.persons(); ++p) {
    for (int i = 0; i < data.items(); ++i) {
      if (i > 0) out += ',';
      if (!data.missing(p, i)) out += std::to_string(data.code(p, i));
    }
    out += '\n';
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw ContractError("cannot format number");
  return std::string(buf, ptr);
}

std::string format_table(const std::vector<std::string>& header, const Eigen::MatrixXd& values,
                         const std::vector<std::string>& row_labels) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols() + 1) {
    throw ContractError("header needs a label column plus one name per value column");
  }
  if (!row_labels.empty() && static_cast<Eigen::Index>(row_labels.size()) != values.rows()) {
    throw ContractError("one row label per row is required");
  }
  std::string out;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (k > 0) out += ',';
    out += quote_if_needed(header[k]);
  }
  out += '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out += row_labels.empty() ? std::to_string(r + 1) : quote_if_needed(row_labels[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out += ',';
      out += format_double(values(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
  if (!out) throw ValidationError("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace irt::io
