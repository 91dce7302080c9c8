#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "catimpute/data.hpp"

namespace catimpute {

namespace {

// Reads one logical record (quoted fields may span lines). Returns false at EOF.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char ch;
  while (in.get(ch)) {
    any = true;
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      ++line_no;
      fields.push_back(std::move(field));
      return true;
    } else if (ch == '\r') {
      if (in.peek() == '\n') continue;
      field += ch;
    } else {
      field += ch;
    }
  }
  if (in_quotes) throw ValidationError("unterminated quoted field at line " + std::to_string(line_no));
  if (!any) return false;
  fields.push_back(std::move(field));
  ++line_no;
  return true;
}

bool blank(const std::vector<std::string>& fields) {
  return fields.size() == 1 && fields[0].empty();
}

bool needs_quotes(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void write_field(std::ostream& out, std::string_view s) {
  if (!needs_quotes(s)) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

std::vector<std::string> split_csv_record(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::vector<std::string> fields;
  std::size_t line_no = 1;
  if (!read_record(in, fields, line_no)) fields.clear();
  return fields;
}

CategoricalDataset read_csv(std::istream& in, std::shared_ptr<const Codebook> codebook) {
  const Codebook& cb = *codebook;
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  if (!read_record(in, fields, line_no)) throw ValidationError("CSV input is empty");

  // column position -> variable index
  std::vector<std::size_t> var_of_column;
  std::vector<bool> seen(cb.size(), false);
  for (const auto& name : fields) {
    auto j = cb.find(name);
    if (!j) throw ValidationError("CSV header names unknown variable '" + name + "'");
    if (seen[*j]) throw ValidationError("CSV header repeats variable '" + name + "'");
    seen[*j] = true;
    var_of_column.push_back(*j);
  }
  for (std::size_t j = 0; j < cb.size(); ++j)
    if (!seen[j])
      throw ValidationError("CSV header lacks codebook variable '" + cb.variable(j).name + "'");

  std::vector<std::vector<Code>> rows;
  std::vector<std::vector<bool>> missing;
  std::size_t record_line = line_no + 1;
  while (read_record(in, fields, line_no)) {
    if (blank(fields)) {
      record_line = line_no + 1;
      continue;
    }
    if (fields.size() != var_of_column.size())
      throw ValidationError("row at line " + std::to_string(record_line) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(var_of_column.size()));
    std::vector<Code> codes(cb.size(), 0);
    std::vector<bool> miss(cb.size(), false);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto j = var_of_column[c];
      if (fields[c] == cb.na_token()) {
        miss[j] = true;
        continue;
      }
      auto code = cb.find_level(j, fields[c]);
      if (!code)
        throw ValidationError("line " + std::to_string(record_line) + ", column '" +
                              cb.variable(j).name + "': unknown level '" + fields[c] + "'");
      codes[j] = *code;
    }
    rows.push_back(std::move(codes));
    missing.push_back(std::move(miss));
    record_line = line_no + 1;
  }
  if (rows.empty()) throw ValidationError("CSV input has no data rows");

  CategoricalDataset data(std::move(codebook), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      data.set(i, j, rows[i][j]);
      if (missing[i][j]) data.set_missing(i, j, true);
    }
  }
  return data;
}

CategoricalDataset load_csv(const std::filesystem::path& path,
                            std::shared_ptr<const Codebook> codebook) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_csv(in, std::move(codebook));
}

void write_csv(const CategoricalDataset& data, std::ostream& out) {
  const auto& cb = data.codebook();
  for (std::size_t j = 0; j < data.cols(); ++j) {
    if (j) out << ',';
    write_field(out, cb.variable(j).name);
  }
  out << '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      if (j) out << ',';
      if (data.missing(i, j))
        write_field(out, cb.na_token());
      else
        write_field(out, cb.variable(j).levels[static_cast<std::size_t>(data.at(i, j))]);
    }
    out << '\n';
  }
}

void write_csv(const CategoricalDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_csv(data, out);
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace catimpute
