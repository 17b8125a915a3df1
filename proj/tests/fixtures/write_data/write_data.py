import os
from datetime import datetime


def write_data_to_file(file_path, data):
    """Write data to file, stamping it with the current date."""
    date = datetime.now()
    date = date.isoformat()  # Get ISO format date
    # check if the file path exists
    if os.path.exists(file_path):
        with open(file_path, "a") as f:
            f.write(data)
    else:
        with open(file_path, "w") as f:
            f.write(date)
            f.write(data)
