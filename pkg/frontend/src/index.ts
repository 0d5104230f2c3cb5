export {
  BoundHandle,
  DenseNetParams,
  RQConfigRecord,
  SUPPORTED_ARTIFACT_VERSION,
  loadCodebook,
} from "./artifact.js";
export { encode, encodeBatch, renderTokenIndices } from "./encode.js";
export {
  DataFormatError,
  DimensionMismatchError,
  TrajtokBindingError,
  VersionMismatchError,
} from "./errors.js";
export {
  DEFAULT_PERIODS,
  FeatureSet,
  TimePeriod,
  VisitPoint,
  extractFeatures,
  roundToFivePercent,
} from "./features.js";
export { Dist, bleu, hitRateAtK, jsd, klDivergence, tvd } from "./metrics.js";
export {
  DEFAULT_SPEC,
  FeatureSpec,
  RewardBreakdown,
  groupAdvantages,
  rewardDistribution,
  rewardLength,
  totalReward,
} from "./reward.js";
