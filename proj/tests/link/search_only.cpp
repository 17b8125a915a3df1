// Builds and queries an index using only the search library: no parser, no trainer.

#include <cstdio>
#include <vector>

#include "mgcs/common/error.hpp"
#include "mgcs/encoder/encoder.hpp"
#include "mgcs/search/index.hpp"

int main() {
  using namespace mgcs;
  const auto params = EncoderParams::initialize(8, 3);
  search::CorpusIndex index(params.d, fingerprint(params));
  const char* texts[] = {"open the file", "sum the column", "parse the header"};
  for (int i = 0; i < 3; ++i) {
    search::EntryInfo e;
    e.snippet_id = "m.py:1:f::S" + std::to_string(i);
    e.function_id = "m.py:1:f";
    e.granularity = Granularity::Statement;
    index.add(e, encode_query(texts[i], params));
  }
  const auto back = search::CorpusIndex::deserialize(index.serialize());
  const search::Searcher searcher(back, params);
  std::vector<search::EvalItem> items;
  for (int i = 0; i < 3; ++i) items.push_back({texts[i], "m.py:1:f::S" + std::to_string(i), Granularity::Statement});
  const auto report = search::evaluate_mrr(items, searcher);
  const auto hits = searcher.search("sum the column", 1);
  std::printf("mrr %.6f top %s\n", report.mrr, hits.empty() ? "-" : hits[0].snippet_id.c_str());
  return report.mrr == 1.0 && !hits.empty() && hits[0].snippet_id == "m.py:1:f::S1" ? 0 : 1;
}
