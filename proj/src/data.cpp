#include "slatelab/data.hpp"

#include <zlib.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace slatelab {

using json = nlohmann::ordered_json;

const char* label_name(Label l) {
  switch (l) {
    case Label::impression: return "impression";
    case Label::click: return "click";
    case Label::atc: return "atc";
    case Label::pay: return "pay";
  }
  throw DomainError("unknown label");
}

Label label_from_name(const std::string& s) {
  if (s == "impression") return Label::impression;
  if (s == "click") return Label::click;
  if (s == "atc") return Label::atc;
  if (s == "pay") return Label::pay;
  throw DataError("unknown label name: " + s);
}

std::vector<int> binary_labels(const SlateSample& sample) {
  std::vector<int> out(sample.labels.size());
  for (std::size_t i = 0; i < sample.labels.size(); ++i)
    out[i] = (sample.labels[i] == Label::atc || sample.labels[i] == Label::pay)
                 ? 1
                 : 0;
  return out;
}

bool slate_has_positive(const SlateSample& sample) {
  for (Label l : sample.labels)
    if (l == Label::atc || l == Label::pay) return true;
  return false;
}

bool slate_has_pay(const SlateSample& sample) {
  for (Label l : sample.labels)
    if (l == Label::pay) return true;
  return false;
}

std::vector<SlateSample> reweight_negatives(const std::vector<SlateSample>& in,
                                            double target_ratio,
                                            std::uint64_t seed) {
  if (target_ratio <= 0.0 || target_ratio > 1.0)
    throw DomainError("reweight_negatives: target_ratio must be in (0,1]");
  std::size_t pos = 0, neg = 0;
  for (const auto& s : in) (slate_has_positive(s) ? pos : neg)++;
  if (pos == 0)
    throw DataError("reweight_negatives: corpus has no positive samples");
  if (neg == 0) return in;
  const double current = static_cast<double>(pos) / static_cast<double>(neg);
  if (current >= target_ratio) return in;
  const double keep =
      static_cast<double>(pos) / (target_ratio * static_cast<double>(neg));
  Rng rng(seed);
  std::vector<SlateSample> out;
  out.reserve(in.size());
  for (const auto& s : in) {
    if (slate_has_positive(s)) {
      out.push_back(s);
    } else if (rng.uniform() < keep) {
      out.push_back(s);
    }
  }
  return out;
}

// ---- JSON (de)serialization ----

namespace {

json item_to_json(const ItemFeatures& it) {
  json j;
  j["item"] = it.item_id;
  j["category"] = it.category_id;
  j["brand"] = it.brand_id;
  j["seller"] = it.seller_id;
  j["shop"] = it.shop_id;
  j["price"] = it.price_bucket;
  j["stats"] = it.stats;
  if (it.position_hint)
    j["pos"] = *it.position_hint;
  else
    j["pos"] = nullptr;
  return j;
}

ItemFeatures item_from_json(const json& j) {
  ItemFeatures it;
  it.item_id = j.at("item").get<int>();
  it.category_id = j.at("category").get<int>();
  it.brand_id = j.at("brand").get<int>();
  it.seller_id = j.at("seller").get<int>();
  it.shop_id = j.at("shop").get<int>();
  it.price_bucket = j.at("price").get<int>();
  it.stats = j.at("stats").get<std::vector<double>>();
  if (j.contains("pos") && !j.at("pos").is_null())
    it.position_hint = j.at("pos").get<int>();
  return it;
}

json items_to_json(const std::vector<ItemFeatures>& items) {
  json arr = json::array();
  for (const auto& it : items) arr.push_back(item_to_json(it));
  return arr;
}

std::vector<ItemFeatures> items_from_json(const json& arr) {
  std::vector<ItemFeatures> out;
  out.reserve(arr.size());
  for (const auto& j : arr) out.push_back(item_from_json(j));
  return out;
}

json context_to_json(const QueryContext& c) {
  json j;
  j["query"] = c.query_id;
  j["user"] = c.user_id;
  j["pref"] = c.user_pref;
  j["session"] = {{"pv", items_to_json(c.session.pv_list)},
                  {"click", items_to_json(c.session.click_list)},
                  {"atc", items_to_json(c.session.atc_list)},
                  {"pay", items_to_json(c.session.pay_list)}};
  return j;
}

QueryContext context_from_json(const json& j) {
  QueryContext c;
  c.query_id = j.at("query").get<int>();
  c.user_id = j.at("user").get<int>();
  c.user_pref = j.at("pref").get<std::vector<double>>();
  const json& s = j.at("session");
  c.session.pv_list = items_from_json(s.at("pv"));
  c.session.click_list = items_from_json(s.at("click"));
  c.session.atc_list = items_from_json(s.at("atc"));
  c.session.pay_list = items_from_json(s.at("pay"));
  return c;
}

json header_to_json(const DatasetHeader& h) {
  json j;
  j["kind"] = "header";
  j["format_version"] = h.format_version;
  j["record_kind"] = h.record_kind;
  j["count"] = h.count;
  j["seed"] = h.seed;
  if (!h.provenance_json.empty())
    j["provenance"] = json::parse(h.provenance_json);
  else
    j["provenance"] = nullptr;
  return j;
}

DatasetHeader header_from_json(const json& j) {
  DatasetHeader h;
  h.format_version = j.at("format_version").get<int>();
  h.record_kind = j.at("record_kind").get<std::string>();
  h.count = j.at("count").get<std::size_t>();
  h.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("provenance") && !j.at("provenance").is_null())
    h.provenance_json = j.at("provenance").dump();
  return h;
}

bool has_gz_suffix(const std::string& path) {
  return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

/// Line sink over either a plain ofstream or a gzFile, chosen by extension.
class LineWriter {
 public:
  explicit LineWriter(const std::string& path) : gz_(has_gz_suffix(path)) {
    if (gz_) {
      gzf_ = gzopen(path.c_str(), "wb");
      if (gzf_ == nullptr) throw DataError("cannot write " + path);
    } else {
      os_.open(path, std::ios::trunc);
      if (!os_) throw DataError("cannot write " + path);
    }
    path_ = path;
  }
  ~LineWriter() {
    if (gz_ && gzf_ != nullptr) gzclose(gzf_);
  }
  void line(const std::string& s) {
    if (gz_) {
      if (gzwrite(gzf_, s.data(), static_cast<unsigned>(s.size())) <= 0 &&
          !s.empty())
        throw DataError("write failure on " + path_);
      gzputc(gzf_, '\n');
    } else {
      os_ << s << '\n';
      if (!os_) throw DataError("write failure on " + path_);
    }
  }

 private:
  bool gz_;
  std::ofstream os_;
  gzFile gzf_ = nullptr;
  std::string path_;
};

class LineReader {
 public:
  explicit LineReader(const std::string& path) : gz_(has_gz_suffix(path)) {
    if (gz_) {
      gzf_ = gzopen(path.c_str(), "rb");
      if (gzf_ == nullptr) throw DataError("cannot open " + path);
    } else {
      is_.open(path);
      if (!is_) throw DataError("cannot open " + path);
    }
  }
  ~LineReader() {
    if (gz_ && gzf_ != nullptr) gzclose(gzf_);
  }
  bool next(std::string& out) {
    if (gz_) {
      out.clear();
      char buf[4096];
      bool got = false;
      while (true) {
        if (gzgets(gzf_, buf, sizeof(buf)) == nullptr) return got;
        got = true;
        out += buf;
        if (!out.empty() && out.back() == '\n') {
          out.pop_back();
          return true;
        }
      }
    }
    return static_cast<bool>(std::getline(is_, out));
  }

 private:
  bool gz_;
  std::ifstream is_;
  gzFile gzf_ = nullptr;
};

json parse_line(const std::string& line, std::size_t lineno) {
  try {
    return json::parse(line);
  } catch (const std::exception& e) {
    throw DataError("line " + std::to_string(lineno) +
                    ": malformed record: " + e.what());
  }
}

}  // namespace

void write_slates(const std::string& path, const DatasetHeader& header,
                  const std::vector<SlateSample>& slates) {
  DatasetHeader h = header;
  h.record_kind = "slate";
  h.count = slates.size();
  LineWriter w(path);
  w.line(header_to_json(h).dump());
  for (const auto& s : slates) {
    json j;
    j["kind"] = "slate";
    j["context"] = context_to_json(s.context);
    j["items"] = items_to_json(s.items);
    json labels = json::array();
    for (Label l : s.labels) labels.push_back(label_name(l));
    j["labels"] = labels;
    w.line(j.dump());
  }
}

void write_candidates(const std::string& path, const DatasetHeader& header,
                      const std::vector<CandidateSet>& sets) {
  DatasetHeader h = header;
  h.record_kind = "candidate_set";
  h.count = sets.size();
  LineWriter w(path);
  w.line(header_to_json(h).dump());
  for (const auto& c : sets) {
    json j;
    j["kind"] = "candidate_set";
    j["context"] = context_to_json(c.context);
    j["items"] = items_to_json(c.items);
    j["ltr_scores"] = c.ltr_scores;
    w.line(j.dump());
  }
}

namespace {

/// Shared scan over a record file. on_record is called per data line.
DatasetHeader scan_file(const std::string& path, const std::string& want_kind,
                        const std::function<void(const json&, std::size_t)>& on_record) {
  LineReader r(path);
  DatasetHeader header;
  bool have_header = false;
  std::string line;
  std::size_t lineno = 0;
  std::size_t records = 0;
  while (r.next(line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = parse_line(line, lineno);
    std::string kind;
    try {
      kind = j.at("kind").get<std::string>();
    } catch (const std::exception&) {
      throw DataError("line " + std::to_string(lineno) +
                      ": record missing 'kind' field");
    }
    if (kind == "header") {
      try {
        header = header_from_json(j);
      } catch (const std::exception& e) {
        throw DataError("line " + std::to_string(lineno) +
                        ": bad header: " + e.what());
      }
      if (header.record_kind != want_kind)
        throw DataError(path + ": expected record kind '" + want_kind +
                        "' but file holds '" + header.record_kind + "'");
      have_header = true;
      continue;
    }
    if (kind != want_kind)
      throw DataError("line " + std::to_string(lineno) +
                      ": expected record kind '" + want_kind + "', got '" +
                      kind + "'");
    try {
      on_record(j, lineno);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
    ++records;
  }
  if (have_header && header.count != records)
    throw DataError(path + ": header declares " + std::to_string(header.count) +
                    " records, file holds " + std::to_string(records));
  header.count = records;
  return header;
}

}  // namespace

SlateDataset load_slates(const std::string& path) {
  SlateDataset ds;
  ds.header = scan_file(path, "slate", [&](const json& j, std::size_t) {
    SlateSample s;
    s.context = context_from_json(j.at("context"));
    s.items = items_from_json(j.at("items"));
    for (const auto& l : j.at("labels"))
      s.labels.push_back(label_from_name(l.get<std::string>()));
    if (s.items.size() != s.labels.size())
      throw DataError("slate items/labels length mismatch");
    ds.slates.push_back(std::move(s));
  });
  return ds;
}

CandidateDataset load_candidates(const std::string& path) {
  CandidateDataset ds;
  ds.header = scan_file(path, "candidate_set", [&](const json& j, std::size_t) {
    CandidateSet c;
    c.context = context_from_json(j.at("context"));
    c.items = items_from_json(j.at("items"));
    c.ltr_scores = j.at("ltr_scores").get<std::vector<double>>();
    if (c.items.size() != c.ltr_scores.size())
      throw DataError("candidate items/scores length mismatch");
    ds.sets.push_back(std::move(c));
  });
  return ds;
}

}  // namespace slatelab
