# Доменная логика: поток, сеть, дистилляция
