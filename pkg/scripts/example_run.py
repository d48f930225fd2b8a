"""Run the loan application example and print the metrics of the cluster models."""

import dprules

config = dprules.PipelineConfig.from_dict({
    'dataset': 'EXAMPLE',
    'evaluation_log': 'full',
    'ensemble_grid': [{'kind': 'random_forest', 'n_trees': 1, 'max_depth': 2,
                       'max_features': None, 'bootstrap': False}],
    'lambda_grid': [0.05],
    'cv_folds': 2,
    'K': 2,
    'output': 'example_output'})
report = dprules.run(config)

# one row per cluster, then the desirable and undesirable baselines
print(report.metrics[['Group', 't-fit L+', 't-fit L-', 't-F1', 'prc']])
for cluster in report.clusters:
    print(cluster['cluster'], cluster['rule'])
