from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='VerificationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('benchmark', models.CharField(max_length=100)),
                ('slug', models.SlugField(blank=True, max_length=100)),
                ('mode', models.CharField(help_text='concrete or symbolic(w)', max_length=20)),
                ('exit_code', models.PositiveSmallIntegerField(
                    choices=[(0, 'Verified'), (1, 'Falsified candidate'), (2, 'Unknown or error')])),
                ('verdicts', models.JSONField(default=list)),
                ('final_box', models.JSONField(default=list)),
                ('final_volume', models.FloatField(blank=True, null=True)),
                ('wall_time_s', models.FloatField(default=0.0)),
                ('results_path', models.CharField(blank=True, max_length=500)),
                ('error', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'db_table': 'verification_runs',
                'ordering': ['-created_at'],
            },
        ),
    ]
