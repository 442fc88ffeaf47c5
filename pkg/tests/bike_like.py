"""Synthetic stand-in with the column layout of the Seoul bike-sharing file.

Values are generated, not observed; tests that need the real file look for
it separately and fail when it is absent.
"""

import csv
import datetime as dt

import numpy as np

HEADER = [
    "Date", "Rented Bike Count", "Hour", "Temperature(°C)", "Humidity(%)",
    "Wind speed (m/s)", "Visibility (10m)", "Dew point temperature(°C)",
    "Solar Radiation (MJ/m2)", "Rainfall(mm)", "Snowfall (cm)", "Seasons",
    "Holiday", "Functioning Day",
]
TARGET = "Rented Bike Count"
SEASONS = ["Winter", "Spring", "Summer", "Autumn"]


def write_bike_like(path, rows=8760, seed=0, encoding="latin-1"):
    rng = np.random.default_rng(seed)
    start = dt.date(2017, 12, 1)
    with open(path, "w", newline="", encoding=encoding) as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for i in range(rows):
            day = start + dt.timedelta(days=i // 24)
            hour = i % 24
            season = SEASONS[(day.month % 12) // 3]
            temp = 12 + 14 * np.sin(2 * np.pi * (i / 8760 - 0.3)) + 4 * np.sin(2 * np.pi * hour / 24) + rng.normal(0, 2)
            hum = int(np.clip(55 + rng.normal(0, 18), 0, 98))
            wind = round(abs(rng.normal(1.7, 1.0)), 1)
            vis = int(np.clip(rng.normal(1450, 600), 27, 2000))
            dew = round(temp - (100 - hum) / 5, 1)
            solar = round(max(0.0, np.sin(np.pi * (hour - 6) / 12)) * rng.uniform(0.2, 3.0), 2)
            rain = round(rng.exponential(2.0), 1) if rng.random() < 0.06 else 0.0
            snow = round(rng.exponential(1.0), 1) if temp < 0 and rng.random() < 0.2 else 0.0
            holiday = "Holiday" if rng.random() < 0.05 else "No Holiday"
            functioning = "No" if rng.random() < 0.03 else "Yes"
            count = 0
            if functioning == "Yes":
                peak = 1.0 + 0.8 * np.exp(-((hour - 8) ** 2) / 4) + 1.2 * np.exp(-((hour - 18) ** 2) / 6)
                count = int(max(0.0, (20 * temp + 300) * peak - 6 * hum - 150 * rain + rng.normal(0, 80)))
            w.writerow([
                day.strftime("%d/%m/%Y"), count, hour, round(temp, 1), hum, wind, vis, dew,
                solar, rain, snow, season, holiday, functioning,
            ])
    return path
