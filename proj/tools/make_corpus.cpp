// Writes a synthetic corpus as line-delimited JSON records.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hiasa/corpus.hpp"
#include "hiasa/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic aspect-sentiment corpus"};
  hiasa::SyntheticOptions opt;
  std::string out;
  app.add_option("--sentences", opt.sentences, "number of sentences");
  app.add_option("--seed", opt.seed, "generator seed");
  app.add_option("--distractor-prob", opt.distractor_prob, "probability of an unannotated mention");
  app.add_option("--max-aspects", opt.max_aspects, "aspects per sentence (upper bound)");
  app.add_option("--id-prefix", opt.id_prefix, "record id prefix");
  app.add_option("--out", out, "output path (stdout when omitted)");
  CLI11_PARSE(app, argc, argv);

  const auto data = hiasa::generate_synthetic(opt);
  if (out.empty()) {
    hiasa::write_dataset(std::cout, data);
  } else {
    std::ofstream os(out);
    hiasa::write_dataset(os, data);
  }
  return 0;
}
