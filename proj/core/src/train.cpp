#include "collabrec/train.hpp"

namespace collabrec::train {

std::string to_string(TuneStage s) {
  switch (s) {
    case TuneStage::Step1_Lora: return "step1";
    case TuneStage::Step2_MappingOnly: return "step2-map";
    case TuneStage::Step2_FromScratch: return "step2-scratch";
    case TuneStage::Joint_Ablation: return "joint";
    case TuneStage::Personalized: return "personalized";
  }
  return "?";
}

TuneStage tune_stage_from_string(const std::string& s) {
  if (s == "step1") return TuneStage::Step1_Lora;
  if (s == "step2-map") return TuneStage::Step2_MappingOnly;
  if (s == "step2-scratch") return TuneStage::Step2_FromScratch;
  if (s == "joint") return TuneStage::Joint_Ablation;
  if (s == "personalized") return TuneStage::Personalized;
  throw std::invalid_argument("unknown tuning stage: " + s);
}

}  // namespace collabrec::train
