"""Full refinement study through the library, and the equivalent command line."""
from igac import StudyConfig, run_study
from igac.study import format_csv

result = run_study(StudyConfig("source-1d", k_max=15))
print(format_csv(result.records), end="")
print("verdict:", result.verdict)
print("same table from the shell:  igac study --problem source-1d --kmax 15")
