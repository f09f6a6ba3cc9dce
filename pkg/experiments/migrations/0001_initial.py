import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="SweepRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("name", models.CharField(max_length=200)),
                ("command", models.CharField(default="sweep", max_length=20)),
                ("ensemble_kind", models.CharField(max_length=30)),
                ("config", models.JSONField(default=dict, help_text="Experiment config as given")),
                ("output_dir", models.CharField(max_length=500)),
                ("seed", models.BigIntegerField(default=0)),
                ("trials", models.PositiveIntegerField(default=1)),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("running", "Running"),
                            ("completed", "Completed"),
                            ("failed", "Failed"),
                        ],
                        default="running",
                        max_length=20,
                    ),
                ),
                ("error", models.TextField(blank=True)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
            ],
            options={
                "verbose_name": "Sweep Run",
                "verbose_name_plural": "Sweep Runs",
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="TrialResult",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("estimator", models.CharField(max_length=30)),
                ("budget", models.FloatField()),
                ("trial", models.PositiveIntegerField()),
                (
                    "error",
                    models.FloatField(blank=True, help_text="Weighted L2 error against the oracle", null=True),
                ),
                ("sup_error", models.FloatField(blank=True, null=True)),
                ("subset", models.CharField(blank=True, max_length=100)),
                ("m", models.PositiveIntegerField(blank=True, null=True)),
                ("n_exploit", models.PositiveIntegerField(blank=True, null=True)),
                ("spent", models.FloatField()),
                (
                    "sweep",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="results",
                        to="experiments.sweeprun",
                    ),
                ),
            ],
            options={
                "verbose_name": "Trial Result",
                "verbose_name_plural": "Trial Results",
                "ordering": ["estimator", "budget", "trial"],
                "unique_together": {("sweep", "estimator", "budget", "trial")},
            },
        ),
    ]
